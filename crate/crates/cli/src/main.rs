//! `texturefuse` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use texturefuse::dataset::{
    evaluate_fusion, evaluate_haptic, evaluate_visual, load_tum, make_folds, train_fusion, train_haptic, train_visual,
    write_cache, write_report, CacheModalities, Checkpoint, Corpus, FoldSplit, FusionBundle, Metrics, ModelMeta,
    SavedModel, TrainConfig, TrainOutcome,
};
use texturefuse::haptic::{read_recording, SpectrogramConfig, SpectrumScale};
use texturefuse::inference::{classify_haptic, classify_image, FusionLayer, VoteResult, DEFAULT_FUSION_SAMPLES};
use texturefuse::visual::{channel_means, load_image};
use texturefuse::weights::FILE_EXTENSION;
use texturefuse::{bench_threaded, build, receptive_field, BuildOptions, NetKind, Network};

#[derive(Parser)]
#[command(
    name = "texturefuse",
    version,
    about = "Dense haptic/visual surface material classification"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess a dataset directory into a spectrogram/image cache.
    Preprocess(PreprocessArgs),
    /// Train one network on one cross-validation fold.
    Train(TrainArgs),
    /// Evaluate trained weights on the test items of one fold.
    Eval(EvalArgs),
    /// Classify a single trace and/or image.
    Predict(PredictArgs),
    /// Time dense prediction against the sliding-window reference.
    Bench(BenchArgs),
    /// Print a network's layer table and receptive-field geometry.
    Inspect(InspectArgs),
}

/// Network kinds accepted by `train` and `eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainNet {
    Haptic,
    Visual,
    VisualTcnn,
    Fusion,
}

impl TrainNet {
    fn unimodal(self) -> Option<NetKind> {
        match self {
            TrainNet::Haptic => Some(NetKind::Haptic),
            TrainNet::Visual => Some(NetKind::Visual),
            TrainNet::VisualTcnn => Some(NetKind::VisualTcnn),
            TrainNet::Fusion => None,
        }
    }

    fn file_stem(self) -> &'static str {
        self.unimodal().map_or("fusion", NetKind::name)
    }
}

/// Unimodal network kinds accepted by `bench` and `inspect`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnimodalNet {
    Haptic,
    Visual,
    VisualTcnn,
}

impl From<UnimodalNet> for NetKind {
    fn from(n: UnimodalNet) -> Self {
        match n {
            UnimodalNet::Haptic => NetKind::Haptic,
            UnimodalNet::Visual => NetKind::Visual,
            UnimodalNet::VisualTcnn => NetKind::VisualTcnn,
        }
    }
}

#[derive(Args)]
struct PreprocessArgs {
    /// Dataset root whose `<class>/haptic/` traces are converted to spectrograms.
    #[arg(long, value_name = "ROOT")]
    haptic: Option<PathBuf>,
    /// Dataset root whose `<class>/image/` pictures are half-resized.
    #[arg(long, value_name = "ROOT")]
    images: Option<PathBuf>,
    /// Cache directory (created if needed; an existing manifest is extended).
    #[arg(long)]
    out: PathBuf,
    /// Samples dropped from the start of every trace.
    #[arg(long, default_value_t = 0)]
    trim: usize,
    /// Spectrogram bin scale: magnitude, power or log.
    #[arg(long, default_value = "magnitude")]
    scale: String,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset root or preprocessed cache directory.
    #[arg(long)]
    data: PathBuf,
    /// Zero-based fold index.
    #[arg(long)]
    fold: usize,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    net: TrainNet,
    #[command(flatten)]
    data: DataArgs,
    /// Output directory for weights and the loss log.
    #[arg(long)]
    out: PathBuf,
    /// For fusion: directory holding trained unimodal weights to start from.
    #[arg(long)]
    init: Option<PathBuf>,
    /// For fusion: which visual network to pair with the haptic one.
    #[arg(long, value_enum, default_value = "visual")]
    visual_net: UnimodalNet,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    net: TrainNet,
    #[command(flatten)]
    data: DataArgs,
    /// Directory written by `train`.
    #[arg(long)]
    weights: PathBuf,
    /// Directory for metrics.json, confusion.csv and per_class.csv.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Acceleration trace file.
    #[arg(long)]
    haptic: Option<PathBuf>,
    /// Image file.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Directory written by `train`.
    #[arg(long)]
    weights: PathBuf,
    /// Expected fusion tap layer (fc2 or fc3); must match the trained model.
    #[arg(long)]
    fusion: Option<String>,
    /// Feature pairs sampled for fusion.
    #[arg(long, default_value_t = DEFAULT_FUSION_SAMPLES)]
    k: usize,
    /// Seed for fusion sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    net: UnimodalNet,
    /// Spectrogram frames (haptic).
    #[arg(long, default_value_t = 800)]
    frames: usize,
    /// Square image side (visual nets).
    #[arg(long, default_value_t = 384)]
    size: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Divide every layer width by this factor.
    #[arg(long, default_value_t = 1)]
    width_divisor: usize,
    /// Threads for the sliding-window path (1 = single-threaded).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long, value_enum)]
    net: UnimodalNet,
    #[arg(long, default_value_t = 1)]
    width_divisor: usize,
    #[arg(long, default_value_t = texturefuse::builder::TUM_CLASS_COUNT)]
    classes: usize,
    /// Two-group convolutions in conv2, conv4 and conv5 (visual nets).
    #[arg(long)]
    grouped: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    if a.haptic.is_none() && a.images.is_none() {
        bail!("preprocess needs --haptic and/or --images");
    }
    let scale: SpectrumScale = a.scale.parse()?;
    let spectrogram = SpectrogramConfig {
        scale,
        ..Default::default()
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut jobs: Vec<(&Path, CacheModalities)> = Vec::new();
    match (&a.haptic, &a.images) {
        (Some(h), Some(i)) if h == i => jobs.push((
            h,
            CacheModalities {
                haptic: true,
                images: true,
            },
        )),
        (h, i) => {
            if let Some(h) = h {
                jobs.push((
                    h,
                    CacheModalities {
                        haptic: true,
                        images: false,
                    },
                ));
            }
            if let Some(i) = i {
                jobs.push((
                    i,
                    CacheModalities {
                        haptic: false,
                        images: true,
                    },
                ));
            }
        }
    }
    for (root, which) in jobs {
        let index = load_tum(root)?;
        let written = write_cache(&index, &a.out, which, spectrogram, a.trim)?;
        println!(
            "{}: {} classes x {} items, {written} files written to {}",
            root.display(),
            index.class_count(),
            index.items_per_class(),
            a.out.display()
        );
    }
    Ok(())
}

/// Build the configuration (defaults, file, overrides) and the requested fold.
fn setup(net: TrainNet, d: &DataArgs) -> Result<(TrainConfig, Corpus, FoldSplit)> {
    let mut cfg = match net.unimodal() {
        Some(kind) => TrainConfig::for_net(kind),
        None => TrainConfig::for_fusion(),
    };
    if let Some(path) = &d.config {
        cfg.load(path)?;
    }
    for kv in &d.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    let spectrogram = SpectrogramConfig {
        scale: cfg.spectrum_scale,
        ..Default::default()
    };
    let corpus = Corpus::load(&d.data, spectrogram, cfg.trim_leading)?;
    let folds = make_folds(corpus.class_count(), corpus.items_per_class(), cfg.folds, cfg.seed)?;
    let fold = folds
        .get(d.fold)
        .cloned()
        .ok_or_else(|| anyhow!("fold {} out of range (0..{})", d.fold, folds.len()))?;
    Ok((cfg, corpus, fold))
}

fn weights_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.{FILE_EXTENSION}"))
}

fn write_losses(path: &Path, outcome: &TrainOutcome) -> Result<()> {
    let mut csv = String::from("iter,lr,loss\n");
    for r in &outcome.losses {
        csv.push_str(&format!("{},{:e},{}\n", r.iter, r.lr, r.loss));
    }
    fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}

fn train(a: TrainArgs) -> Result<()> {
    let (cfg, corpus, fold) = setup(a.net, &a.data)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = a.net.file_stem();
    let outcome = match a.net.unimodal() {
        Some(NetKind::Haptic) => {
            let (model, outcome) = train_haptic(&corpus, &fold, &cfg, &mut |_, _| Checkpoint::Continue)?;
            model.save(&weights_path(&a.out, stem))?;
            outcome
        }
        Some(_) => {
            let (model, outcome) = train_visual(&corpus, &fold, &cfg, &mut |_, _| Checkpoint::Continue)?;
            model.save(&weights_path(&a.out, stem))?;
            outcome
        }
        None => {
            let mut bundle = initial_bundle(&a, &cfg, &corpus, &fold)?;
            let outcome = train_fusion(&mut bundle, &corpus, &fold, &cfg, &mut |_, _| Checkpoint::Continue)?;
            bundle.save(&weights_path(&a.out, stem))?;
            outcome
        }
    };
    write_losses(&a.out.join(format!("{stem}-losses.csv")), &outcome)?;
    let last = outcome.losses.last().map_or(f64::NAN, |r| r.loss);
    println!(
        "trained {stem} on fold {} for {} iterations (last logged loss {last:.5}); weights in {}",
        a.data.fold,
        outcome.iterations,
        weights_path(&a.out, stem).display()
    );
    Ok(())
}

/// Unimodal halves of a fusion model: loaded from `--init`, or freshly
/// initialised when no pretrained weights are given.
fn initial_bundle(a: &TrainArgs, cfg: &TrainConfig, corpus: &Corpus, fold: &FoldSplit) -> Result<FusionBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let visual_kind = NetKind::from(a.visual_net);
    let (haptic, visual) = match &a.init {
        Some(dir) => (
            SavedModel::load(&weights_path(dir, NetKind::Haptic.name()))?,
            SavedModel::load(&weights_path(dir, visual_kind.name()))?,
        ),
        None => {
            log::warn!("no --init directory: fusion starts from randomly initialised unimodal networks");
            let meta = |net, means| ModelMeta {
                net,
                width_divisor: cfg.width_divisor,
                grouped: cfg.grouped,
                class_names: corpus.class_names.clone(),
                channel_means: means,
                init: cfg.init,
                seed: cfg.seed,
                spectrogram: corpus.spectrogram,
                trim_leading: cfg.trim_leading,
            };
            let means = channel_means(
                fold.train
                    .iter()
                    .enumerate()
                    .flat_map(|(c, items)| items.iter().map(move |&i| &corpus.images[c][i])),
            );
            (
                SavedModel::random(meta(NetKind::Haptic, None), &mut rng)?,
                SavedModel::random(meta(visual_kind, Some(means)), &mut rng)?,
            )
        }
    };
    if haptic.meta.class_names != corpus.class_names {
        bail!(
            "initial weights were trained on different classes than {}",
            a.data.data.display()
        );
    }
    Ok(FusionBundle::new(
        haptic,
        visual,
        cfg.fusion_layer,
        cfg.feature_tap,
        &mut rng,
    )?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let (cfg, corpus, fold) = setup(a.net, &a.data)?;
    let path = weights_path(&a.weights, a.net.file_stem());
    let metrics: Metrics = match a.net.unimodal() {
        Some(NetKind::Haptic) => evaluate_haptic(&SavedModel::load(&path)?.net, &corpus, &fold.test)?,
        Some(_) => evaluate_visual(&SavedModel::load(&path)?, &corpus, &fold.test)?,
        None => evaluate_fusion(
            &FusionBundle::load(&path)?,
            &corpus,
            &fold.test,
            cfg.fusion_samples,
            cfg.seed,
        )?,
    };
    if metrics.class_names != corpus.class_names {
        bail!("weights and dataset disagree on class names");
    }
    write_report(&a.report, &metrics)?;
    println!(
        "{} fold {}: fragment accuracy {:.4}, voting accuracy {:.4} over {} items; report in {}",
        a.net.file_stem(),
        a.data.fold,
        metrics.fragment_accuracy,
        metrics.voting_accuracy,
        metrics.items,
        a.report.display()
    );
    Ok(())
}

fn vote_json(modality: &str, names: &[String], vote: &VoteResult) -> serde_json::Value {
    let counts: serde_json::Map<String, serde_json::Value> = vote
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(c, &n)| (names[c].clone(), json!(n)))
        .collect();
    let fragments: Vec<&str> = vote.fragment_labels.iter().map(|&l| names[l].as_str()).collect();
    json!({
        "modality": modality,
        "label": names[vote.label],
        "label_index": vote.label,
        "counts": counts,
        "fragment_labels": fragments,
    })
}

fn load_visual_model(dir: &Path) -> Result<SavedModel> {
    for kind in [NetKind::Visual, NetKind::VisualTcnn] {
        let path = weights_path(dir, kind.name());
        if path.is_file() {
            return Ok(SavedModel::load(&path)?);
        }
    }
    bail!("no visual or visual-tcnn weights in {}", dir.display())
}

fn predict(a: PredictArgs) -> Result<()> {
    let value = match (&a.haptic, &a.image) {
        (None, None) => bail!("predict needs --haptic and/or --image"),
        (Some(trace), None) => {
            let model = SavedModel::load(&weights_path(&a.weights, NetKind::Haptic.name()))?;
            let frames = model.meta.haptic_input(&read_recording(trace)?)?;
            vote_json(
                "haptic",
                &model.meta.class_names,
                &classify_haptic(&model.net, &frames)?,
            )
        }
        (None, Some(image)) => {
            let model = load_visual_model(&a.weights)?;
            let pixels = model.meta.image_input(&load_image(image)?)?;
            vote_json("visual", &model.meta.class_names, &classify_image(&model.net, &pixels)?)
        }
        (Some(trace), Some(image)) => {
            let bundle = FusionBundle::load(&weights_path(&a.weights, "fusion"))?;
            if let Some(requested) = &a.fusion {
                let layer: FusionLayer = requested.parse()?;
                if layer != bundle.layer {
                    bail!(
                        "fusion model was trained on {} features, --fusion asked for {}",
                        bundle.layer.layer_name(),
                        layer.layer_name()
                    );
                }
            }
            let frames = bundle.haptic.meta.haptic_input(&read_recording(trace)?)?;
            let pixels = bundle.visual.meta.image_input(&load_image(image)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let vote = bundle.model().classify(&frames, &pixels, a.k, &mut rng)?;
            vote_json("fusion", bundle.class_names(), &vote)
        }
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let kind = NetKind::from(a.net);
    let spec = build(
        kind,
        &BuildOptions::scaled(a.width_divisor, texturefuse::builder::TUM_CLASS_COUNT),
    )?;
    let shape = match kind {
        NetKind::Haptic => [1, 50, a.frames],
        _ => [3, a.size, a.size],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let net = Network::<f32>::new_random(spec, &mut rng)?;
    let report = bench_threaded(&net, shape, a.runs, a.warmup, a.threads, &mut rng)?;
    println!("{report}");
    println!();
    println!("{}", texturefuse::BenchReport::CSV_HEADER);
    println!("{}", report.csv_row());
    if !report.passed {
        bail!(
            "dense and sliding outputs differ by {:e} at (class, row, col) {:?}",
            report.max_dev,
            report.max_dev_at
        );
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let opts = BuildOptions {
        width_divisor: a.width_divisor,
        class_count: a.classes,
        grouped: a.grouped,
    };
    let spec = build(a.net.into(), &opts)?;
    let rf = receptive_field(&spec)?;
    let net = Network::<f32>::zeros(spec.clone())?;
    println!(
        "{} ({} layers, {} parameters)",
        spec.name,
        spec.layers.len(),
        net.parameter_count()
    );
    print!("{spec}");
    println!("receptive field {}x{}", rf.rf.0, rf.rf.1);
    println!("jump {}x{}", rf.jump.0, rf.jump.1);
    println!("min input {}x{}", rf.min_input.0, rf.min_input.1);
    Ok(())
}
