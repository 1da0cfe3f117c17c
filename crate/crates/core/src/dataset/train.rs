use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{RotationMode, TrainConfig};
use super::corpus::Corpus;
use super::folds::FoldSplit;
use super::metrics::Metrics;
use super::model::{FusionBundle, ModelMeta, SavedModel};
use crate::builder::{import_alexnet_conv_weights, receptive_field, NetKind};
use crate::error::{Error, Result};
use crate::haptic::{normalize_channels, subsample_training_window};
use crate::inference::{classify_haptic, classify_image, feature_tap, pair_features};
use crate::network::{accumulate, ConvParams, Gradients, Mode, Network, Tape};
use crate::ops::softmax_cross_entropy;
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;
use crate::visual::{bilinear_resize, channel_means, mean_subtract, rotate_arbitrary, rotate_quarter, sample_patch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub losses: Vec<LossRecord>,
    pub iterations: usize,
    pub stopped_early: bool,
}

/// Returned by the progress hook to continue or end training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checkpoint {
    Continue,
    Stop,
}

/// Progress hook, called every `log_every` iterations with the number of
/// completed iterations and the current network(s).
pub type Hook<'a, N> = &'a mut dyn FnMut(usize, &N) -> Checkpoint;

fn haptic_input<R: Rng + ?Sized>(
    corpus: &Corpus,
    class: usize,
    item: usize,
    frames: usize,
    rng: &mut R,
) -> Result<Tensor<f32>> {
    let window = subsample_training_window(&corpus.haptic[class][item], frames, rng)?;
    Ok(normalize_channels(&window).frames)
}

fn visual_input<R: Rng + ?Sized>(
    corpus: &Corpus,
    class: usize,
    item: usize,
    size: usize,
    rotation: RotationMode,
    means: &[f32; 3],
    rng: &mut R,
) -> Result<Tensor<f32>> {
    let patch = sample_patch(&corpus.images[class][item], size, rng)?;
    let rotated = match rotation {
        RotationMode::None => patch,
        RotationMode::Quarter => rotate_quarter(&patch, rng.random_range(0..4))?,
        RotationMode::Arbitrary => {
            let mut r = rotate_arbitrary(&patch, rng.random_range(0.0..360.0))?;
            if r.height() != size {
                r.pixels = bilinear_resize(&r.pixels, size, size)?;
            }
            r
        }
    };
    mean_subtract(&rotated, means)
}

fn check_train_items(fold: &FoldSplit, corpus: &Corpus) -> Result<()> {
    if fold.train.len() != corpus.class_count() || fold.train.iter().any(|t| t.is_empty()) {
        return Err(Error::Dataset("every class needs at least one training item".into()));
    }
    Ok(())
}

fn record(outcome: &mut TrainOutcome, iter: usize, lr: f64, loss: f64, net_name: &str) {
    log::info!("{net_name} iter {iter} lr {lr:.3e} loss {loss:.5}");
    outcome.losses.push(LossRecord { iter, lr, loss });
}

/// Class-balanced mini-batch training of one network with Adam.
pub fn train_unimodal<R: RngCore>(
    net: &mut Network<f32>,
    corpus: &Corpus,
    fold: &FoldSplit,
    cfg: &TrainConfig,
    means: &[f32; 3],
    rng: &mut R,
    hook: Hook<'_, Network<f32>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_train_items(fold, corpus)?;
    let kind = cfg
        .net
        .ok_or_else(|| Error::Config("unimodal training needs a network kind".into()))?;
    let mut adam = AdamState::new(AdamConfig {
        weight_decay: cfg.weight_decay,
        ..Default::default()
    });
    let mut outcome = TrainOutcome::default();
    let end = net.logits_end();
    let scale = 1.0 / cfg.batch_size as f32;
    for iter in 0..cfg.schedule.total_iters {
        let lr = cfg.schedule.lr_at(iter)?;
        let mut acc = Gradients::zeros_like(net);
        let mut loss_sum = 0.0;
        for _ in 0..cfg.batch_size {
            let class = rng.random_range(0..corpus.class_count());
            let items = &fold.train[class];
            let item = items[rng.random_range(0..items.len())];
            let x = match kind {
                NetKind::Haptic => haptic_input(corpus, class, item, cfg.haptic_frames, rng)?,
                _ => visual_input(corpus, class, item, cfg.image_size, cfg.rotation, means, rng)?,
            };
            let mut tape = Tape::new();
            let logits = net.forward_recorded(&x, &mut tape, Mode::Train(rng), end)?;
            let (loss, grad) = softmax_cross_entropy(&logits, class)?;
            loss_sum += loss;
            let grads = net.backward(&tape, &grad)?;
            accumulate(&mut acc, &grads.layers, scale);
        }
        let loss = loss_sum / cfg.batch_size as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iter, lr });
        }
        if iter % cfg.log_every == 0 {
            record(&mut outcome, iter, lr, loss, &net.spec().name);
        }
        adam.step_network(net, &acc, lr)?;
        outcome.iterations = iter + 1;
        if (iter + 1) % cfg.log_every == 0 && hook(iter + 1, net) == Checkpoint::Stop {
            outcome.stopped_early = iter + 1 < cfg.schedule.total_iters;
            break;
        }
    }
    Ok(outcome)
}

fn new_model(
    kind: NetKind,
    corpus: &Corpus,
    cfg: &TrainConfig,
    means: Option<[f32; 3]>,
    rng: &mut ChaCha8Rng,
) -> Result<SavedModel> {
    SavedModel::random(
        ModelMeta {
            net: kind,
            width_divisor: cfg.width_divisor,
            grouped: cfg.grouped,
            class_names: corpus.class_names.clone(),
            channel_means: means,
            init: cfg.init,
            seed: cfg.seed,
            spectrogram: corpus.spectrogram,
            trim_leading: cfg.trim_leading,
        },
        rng,
    )
}

fn check_input_size(net: &Network<f32>, axes: &[usize], size: usize, what: &str) -> Result<()> {
    let rf = receptive_field(net.spec())?;
    let min = [rf.min_input.0, rf.min_input.1];
    for &a in axes {
        if size < min[a] {
            return Err(Error::Config(format!(
                "{what} {size} is below the network minimum of {}",
                min[a]
            )));
        }
    }
    Ok(())
}

/// Train a haptic network from scratch on one fold.
pub fn train_haptic(
    corpus: &Corpus,
    fold: &FoldSplit,
    cfg: &TrainConfig,
    hook: Hook<'_, Network<f32>>,
) -> Result<(SavedModel, TrainOutcome)> {
    let mut cfg = cfg.clone();
    cfg.net = Some(NetKind::Haptic);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = new_model(NetKind::Haptic, corpus, &cfg, None, &mut rng)?;
    check_input_size(&model.net, &[1], cfg.haptic_frames, "haptic_frames")?;
    let outcome = train_unimodal(&mut model.net, corpus, fold, &cfg, &[0.0; 3], &mut rng, hook)?;
    Ok((model, outcome))
}

/// Train a visual network (`cfg.net` picks VisualNet or its TCNN variant).
pub fn train_visual(
    corpus: &Corpus,
    fold: &FoldSplit,
    cfg: &TrainConfig,
    hook: Hook<'_, Network<f32>>,
) -> Result<(SavedModel, TrainOutcome)> {
    let mut cfg = cfg.clone();
    let kind = match cfg.net {
        Some(k @ (NetKind::Visual | NetKind::VisualTcnn)) => k,
        _ => NetKind::Visual,
    };
    cfg.net = Some(kind);
    let means = channel_means(
        fold.train
            .iter()
            .enumerate()
            .flat_map(|(c, items)| items.iter().map(move |&i| &corpus.images[c][i])),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = new_model(kind, corpus, &cfg, Some(means), &mut rng)?;
    check_input_size(&model.net, &[0, 1], cfg.image_size, "image_size")?;
    if let Some(path) = &cfg.pretrained {
        let outcome = import_alexnet_conv_weights(&mut model.net, path)?;
        log::info!("pretrained trunk: {outcome:?}");
    }
    let outcome = train_unimodal(&mut model.net, corpus, fold, &cfg, &means, &mut rng, hook)?;
    Ok((model, outcome))
}

/// Scatter a feature-vector gradient back to one location of a feature map.
fn scatter(grad: &[f32], shape: &[usize], loc: usize) -> Result<Tensor<f32>> {
    let plane = shape[1] * shape[2];
    let mut out = vec![0f32; shape[0] * plane];
    for (c, &g) in grad.iter().enumerate() {
        out[c * plane + loc] = g;
    }
    Tensor::new(shape.to_vec(), out)
}

fn net_grads(net: &Network<f32>) -> Vec<Option<ConvParams<f32>>> {
    Gradients::zeros_like(net)
}

/// Joint fine-tuning of both unimodal networks and the fusion head on
/// same-class (trace, image) pairs. The head learns at
/// `head_lr_multiplier` times the scheduled rate.
pub fn train_fusion(
    bundle: &mut FusionBundle,
    corpus: &Corpus,
    fold: &FoldSplit,
    cfg: &TrainConfig,
    hook: Hook<'_, FusionBundle>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_train_items(fold, corpus)?;
    if bundle.class_names() != corpus.class_names.as_slice() {
        return Err(Error::Dataset(
            "fusion models and dataset disagree on class names".into(),
        ));
    }
    check_input_size(&bundle.haptic.net, &[1], cfg.haptic_frames, "haptic_frames")?;
    check_input_size(&bundle.visual.net, &[0, 1], cfg.image_size, "image_size")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adam_cfg = AdamConfig {
        weight_decay: cfg.weight_decay,
        ..Default::default()
    };
    let (mut adam_h, mut adam_v, mut adam_f) = (
        AdamState::new(adam_cfg),
        AdamState::new(adam_cfg),
        AdamState::new(adam_cfg),
    );
    let (he, dh) = feature_tap(&bundle.haptic.net, bundle.layer, bundle.tap)?;
    let (ve, _) = feature_tap(&bundle.visual.net, bundle.layer, bundle.tap)?;
    let means = bundle.visual.meta.means();
    let head_end = bundle.head.logits_end();
    let scale = 1.0 / cfg.batch_size as f32;
    let mut outcome = TrainOutcome::default();
    for iter in 0..cfg.schedule.total_iters {
        let lr = cfg.schedule.lr_at(iter)?;
        let mut acc_h = net_grads(&bundle.haptic.net);
        let mut acc_v = net_grads(&bundle.visual.net);
        let mut acc_f = net_grads(&bundle.head);
        let mut loss_sum = 0.0;
        for _ in 0..cfg.batch_size {
            let class = rng.random_range(0..corpus.class_count());
            let items = &fold.train[class];
            let hi = items[rng.random_range(0..items.len())];
            let vi = items[rng.random_range(0..items.len())];
            let xh = haptic_input(corpus, class, hi, cfg.haptic_frames, &mut rng)?;
            let xv = visual_input(corpus, class, vi, cfg.image_size, cfg.rotation, &means, &mut rng)?;

            let (mut tape_h, mut tape_v, mut tape_f) = (Tape::new(), Tape::new(), Tape::new());
            let fh = bundle
                .haptic
                .net
                .forward_recorded(&xh, &mut tape_h, Mode::Train(&mut rng), he)?;
            let fv = bundle
                .visual
                .net
                .forward_recorded(&xv, &mut tape_v, Mode::Train(&mut rng), ve)?;
            let lh = rng.random_range(0..fh.shape()[1] * fh.shape()[2]);
            let lv = rng.random_range(0..fv.shape()[1] * fv.shape()[2]);
            let feat = pair_features(&fh, &fv, &[(lh, lv)])?;
            let logits = bundle
                .head
                .forward_recorded(&feat, &mut tape_f, Mode::Train(&mut rng), head_end)?;
            let (loss, grad) = softmax_cross_entropy(&logits, class)?;
            loss_sum += loss;

            let gf = bundle.head.backward(&tape_f, &grad)?;
            let gin = gf.input.data();
            let gh = bundle
                .haptic
                .net
                .backward(&tape_h, &scatter(&gin[..dh], fh.shape(), lh)?)?;
            let gv = bundle
                .visual
                .net
                .backward(&tape_v, &scatter(&gin[dh..], fv.shape(), lv)?)?;
            accumulate(&mut acc_f, &gf.layers, scale);
            accumulate(&mut acc_h, &gh.layers, scale);
            accumulate(&mut acc_v, &gv.layers, scale);
        }
        let loss = loss_sum / cfg.batch_size as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iter, lr });
        }
        if iter % cfg.log_every == 0 {
            record(&mut outcome, iter, lr, loss, "fusion");
        }
        adam_f.step_network(&mut bundle.head, &acc_f, lr * cfg.head_lr_multiplier)?;
        adam_h.step_network(&mut bundle.haptic.net, &acc_h, lr)?;
        adam_v.step_network(&mut bundle.visual.net, &acc_v, lr)?;
        outcome.iterations = iter + 1;
        if (iter + 1) % cfg.log_every == 0 && hook(iter + 1, bundle) == Checkpoint::Stop {
            outcome.stopped_early = iter + 1 < cfg.schedule.total_iters;
            break;
        }
    }
    Ok(outcome)
}

/// Dense haptic classification of the listed items (`items[class]`).
pub fn evaluate_haptic(net: &Network<f32>, corpus: &Corpus, items: &[Vec<usize>]) -> Result<Metrics> {
    let mut results = Vec::new();
    for (class, list) in items.iter().enumerate() {
        for &i in list {
            let frames = normalize_channels(&corpus.haptic[class][i]).frames;
            results.push((class, classify_haptic(net, &frames)?));
        }
    }
    Ok(Metrics::from_votes(corpus.class_names.clone(), &results))
}

/// Dense image classification of the listed items.
pub fn evaluate_visual(model: &SavedModel, corpus: &Corpus, items: &[Vec<usize>]) -> Result<Metrics> {
    let means = model.meta.means();
    let mut results = Vec::new();
    for (class, list) in items.iter().enumerate() {
        for &i in list {
            let pixels = mean_subtract(&corpus.images[class][i], &means)?;
            results.push((class, classify_image(&model.net, &pixels)?));
        }
    }
    Ok(Metrics::from_votes(corpus.class_names.clone(), &results))
}

/// Fusion classification of item `i` (trace `i` with image `i`) with `k`
/// sampled feature pairs each.
pub fn evaluate_fusion(
    bundle: &FusionBundle,
    corpus: &Corpus,
    items: &[Vec<usize>],
    k: usize,
    seed: u64,
) -> Result<Metrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = bundle.visual.meta.means();
    let model = bundle.model();
    let mut results = Vec::new();
    for (class, list) in items.iter().enumerate() {
        for &i in list {
            let frames = normalize_channels(&corpus.haptic[class][i]).frames;
            let pixels = mean_subtract(&corpus.images[class][i], &means)?;
            results.push((class, model.classify(&frames, &pixels, k, &mut rng)?));
        }
    }
    Ok(Metrics::from_votes(corpus.class_names.clone(), &results))
}
