use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::haptic::is_trace_file;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub name: String,
    pub haptic: Vec<PathBuf>,
    pub images: Vec<PathBuf>,
}

/// Validated dataset listing: every class has the same number of haptic
/// traces and images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub classes: Vec<ClassEntry>,
}

impl DatasetIndex {
    pub fn new(root: PathBuf, classes: Vec<ClassEntry>) -> Result<Self> {
        let first = classes
            .first()
            .ok_or_else(|| Error::Dataset(format!("{}: no class directories", root.display())))?;
        let per_class = first.haptic.len();
        for class in &classes {
            if class.haptic.is_empty() || class.images.is_empty() {
                return Err(Error::Dataset(format!(
                    "class `{}` is missing its {} files",
                    class.name,
                    if class.haptic.is_empty() { "haptic" } else { "image" }
                )));
            }
            if class.haptic.len() != class.images.len() {
                return Err(Error::Dataset(format!(
                    "class `{}` has {} haptic traces but {} images",
                    class.name,
                    class.haptic.len(),
                    class.images.len()
                )));
            }
            if class.haptic.len() != per_class {
                return Err(Error::Dataset(format!(
                    "class `{}` has {} items per modality, class `{}` has {per_class}",
                    class.name,
                    class.haptic.len(),
                    first.name
                )));
            }
        }
        Ok(DatasetIndex { root, classes })
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn items_per_class(&self) -> usize {
        self.classes[0].haptic.len()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

fn modality_files(class_dir: &Path, class: &str, sub: &str, keep: fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let dir = class_dir.join(sub);
    if !dir.is_dir() {
        return Err(Error::Dataset(format!("class `{class}` has no `{sub}` directory")));
    }
    Ok(sorted_entries(&dir)?
        .into_iter()
        .filter(|p| p.is_file() && keep(p))
        .collect())
}

/// Index a dataset directory.
pub fn load_tum(root: &Path) -> Result<DatasetIndex> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{} is not a directory", root.display())));
    }
    let mut classes = Vec::new();
    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let name = class_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Dataset(format!("{}: class name is not UTF-8", class_dir.display())))?
            .to_string();
        classes.push(ClassEntry {
            haptic: modality_files(&class_dir, &name, "haptic", is_trace_file)?,
            images: modality_files(&class_dir, &name, "image", is_image_file)?,
            name,
        });
    }
    DatasetIndex::new(root.to_path_buf(), classes)
}
