use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::VoteResult;

/// Classification metrics over a set of test items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub class_names: Vec<String>,
    pub items: usize,
    pub fragments: usize,
    pub fragment_accuracy: f64,
    pub voting_accuracy: f64,
    /// Row-normalized fragment confusion (rows: true class, columns: predicted).
    pub confusion: Vec<Vec<f64>>,
    pub per_class_fragment: Vec<f64>,
    /// Raw fragment counts behind `confusion`.
    pub fragment_counts: Vec<Vec<usize>>,
    pub correct_votes: usize,
}

impl Metrics {
    pub fn from_votes(class_names: Vec<String>, results: &[(usize, VoteResult)]) -> Self {
        let n = class_names.len();
        let mut counts = vec![vec![0usize; n]; n];
        let mut correct_votes = 0;
        for (truth, vote) in results {
            if vote.label == *truth {
                correct_votes += 1;
            }
            for &l in &vote.fragment_labels {
                counts[*truth][l] += 1;
            }
        }
        Self::from_counts(class_names, counts, correct_votes, results.len())
    }

    fn from_counts(class_names: Vec<String>, counts: Vec<Vec<usize>>, correct_votes: usize, items: usize) -> Self {
        let fragments: usize = counts.iter().flatten().sum();
        let correct: usize = (0..counts.len()).map(|i| counts[i][i]).sum();
        let confusion: Vec<Vec<f64>> = counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect();
        let per_class_fragment = (0..counts.len()).map(|i| confusion[i][i]).collect();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Metrics {
            class_names,
            items,
            fragments,
            fragment_accuracy: ratio(correct, fragments),
            voting_accuracy: ratio(correct_votes, items),
            confusion,
            per_class_fragment,
            fragment_counts: counts,
            correct_votes,
        }
    }

    /// Cross-fold aggregate: accuracies are the mean over folds, the confusion
    /// matrix is built from the pooled counts.
    pub fn aggregate(folds: &[Metrics]) -> Result<Self> {
        let first = folds
            .first()
            .ok_or_else(|| Error::Usage("no fold metrics to aggregate".into()))?;
        let n = first.class_names.len();
        let mut counts = vec![vec![0usize; n]; n];
        let (mut votes, mut items) = (0, 0);
        for m in folds {
            if m.class_names != first.class_names {
                return Err(Error::Dataset("folds disagree on class names".into()));
            }
            for (acc, row) in counts.iter_mut().zip(&m.fragment_counts) {
                for (a, c) in acc.iter_mut().zip(row) {
                    *a += c;
                }
            }
            votes += m.correct_votes;
            items += m.items;
        }
        let mut out = Self::from_counts(first.class_names.clone(), counts, votes, items);
        let k = folds.len() as f64;
        out.fragment_accuracy = folds.iter().map(|m| m.fragment_accuracy).sum::<f64>() / k;
        out.voting_accuracy = folds.iter().map(|m| m.voting_accuracy).sum::<f64>() / k;
        Ok(out)
    }

    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("class");
        for name in &self.class_names {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            s.push_str(name);
            for v in row {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }

    pub fn per_class_csv(&self) -> String {
        let mut s = String::from("class,fragment_accuracy\n");
        for (name, v) in self.class_names.iter().zip(&self.per_class_fragment) {
            let _ = writeln!(s, "{name},{v:.6}");
        }
        s
    }
}

/// Write `metrics.json`, `confusion.csv` and `per_class.csv` into `dir`.
pub fn write_report(dir: &Path, metrics: &Metrics) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (
            "metrics.json",
            serde_json::to_string_pretty(metrics).expect("metrics serialize"),
        ),
        ("confusion.csv", metrics.confusion_csv()),
        ("per_class.csv", metrics.per_class_csv()),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vote(label: usize, frags: &[usize]) -> VoteResult {
        let mut counts = vec![0; 3];
        for &f in frags {
            counts[f] += 1;
        }
        VoteResult {
            label,
            counts,
            fragment_labels: frags.to_vec(),
        }
    }

    fn names() -> Vec<String> {
        ["a", "b", "c"].map(String::from).to_vec()
    }

    #[test]
    fn perfect_predictor_gives_identity() {
        let results: Vec<_> = (0..3).map(|c| (c, vote(c, &[c, c]))).collect();
        let m = Metrics::from_votes(names(), &results);
        assert_eq!((m.fragment_accuracy, m.voting_accuracy), (1.0, 1.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.confusion[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn fragment_accuracy_is_mean_of_per_class_on_balanced_sets() {
        let results = vec![(0, vote(0, &[0, 1])), (1, vote(1, &[1, 1])), (2, vote(0, &[0, 0]))];
        let m = Metrics::from_votes(names(), &results);
        let mean: f64 = m.per_class_fragment.iter().sum::<f64>() / 3.0;
        assert!((m.fragment_accuracy - mean).abs() < 1e-12);
        assert!((m.voting_accuracy - 2.0 / 3.0).abs() < 1e-12);
        for row in &m.confusion {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(m.confusion_csv().lines().count(), 4);
        let agg = Metrics::aggregate(&[m.clone(), m.clone()]).unwrap();
        assert_eq!(agg.confusion, m.confusion);
    }
}
