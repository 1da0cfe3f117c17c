//! Dataset layout, cross-validation folds, training loops, metrics and
//! synthetic data.
//!
//! On-disk layout (lexicographic ordering everywhere):
//!
//! ```text
//! <root>/<class>/haptic/*.acc3 | *.acc1
//! <root>/<class>/image/*.png | *.jpg | *.jpeg
//! ```

mod config;
mod corpus;
mod folds;
mod index;
mod metrics;
mod model;
pub mod synthetic;
mod train;

pub use config::{RotationMode, TrainConfig};
pub use corpus::{write_cache, CacheModalities, Corpus, CACHE_MANIFEST};
pub use folds::{make_folds, FoldSplit};
pub use index::{load_tum, ClassEntry, DatasetIndex};
pub use metrics::{write_report, Metrics};
pub use model::{FusionBundle, ModelMeta, SavedModel};
pub use train::{
    evaluate_fusion, evaluate_haptic, evaluate_visual, train_fusion, train_haptic, train_unimodal, train_visual,
    Checkpoint, Hook, LossRecord, TrainOutcome,
};
