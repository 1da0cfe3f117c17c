use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per class, the item indices used for training and testing in one fold.
/// Item `i` means haptic trace `i` and image `i` of that class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

/// Seeded per-class permutation; permuted position `p` is tested in fold
/// `p / (items / folds)`.
pub fn make_folds(class_count: usize, items_per_class: usize, folds: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if class_count == 0 || items_per_class == 0 {
        return Err(Error::Dataset("cannot split an empty dataset".into()));
    }
    if !items_per_class.is_multiple_of(folds) {
        let divisors: Vec<String> = (2..=items_per_class)
            .filter(|d| items_per_class.is_multiple_of(*d))
            .map(|d| d.to_string())
            .collect();
        return Err(Error::Config(format!(
            "{items_per_class} items per class cannot be split into {folds} equal folds; try folds in {{{}}}",
            divisors.join(", ")
        )));
    }
    let per_fold = items_per_class / folds;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Vec<usize>> = (0..class_count)
        .map(|_| {
            let mut p: Vec<usize> = (0..items_per_class).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    Ok((0..folds)
        .map(|fold_id| {
            let mut train = Vec::with_capacity(class_count);
            let mut test = Vec::with_capacity(class_count);
            for perm in &perms {
                let range = fold_id * per_fold..(fold_id + 1) * per_fold;
                let mut te: Vec<usize> = perm[range.clone()].to_vec();
                let mut tr: Vec<usize> = perm
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| !range.contains(pos))
                    .map(|(_, &i)| i)
                    .collect();
                te.sort_unstable();
                tr.sort_unstable();
                train.push(tr);
                test.push(te);
            }
            FoldSplit { fold_id, train, test }
        })
        .collect())
}
