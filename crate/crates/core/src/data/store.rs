//! On-disk dataset layout.
//!
//! ```text
//! <root>/dataset.txt            num_classes=<C>
//! <root>/<split>/manifest.txt   id <TAB> image file <TAB> label file or "-" <TAB> is_labeled (0|1)
//! <root>/<split>/<id>.image.segt
//! <root>/<split>/<id>.label.segt
//! ```
//!
//! `<split>` is one of `labeled`, `unlabeled`, `validation`, `test`.
//! Unlabeled entries may list a label file with `is_labeled = 0`; that file
//! holds the hidden ground truth and is only ever loaded into the hidden
//! slot.

use std::fs;
use std::path::{Path, PathBuf};

use super::{load_tensor, save_tensor, DatasetSplit, Image, LabelMap, Sample, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Labeled,
    Unlabeled,
    Validation,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 4] = [
        SplitKind::Labeled,
        SplitKind::Unlabeled,
        SplitKind::Validation,
        SplitKind::Test,
    ];

    pub fn dir_name(self) -> &'static str {
        match self {
            SplitKind::Labeled => "labeled",
            SplitKind::Unlabeled => "unlabeled",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub image_file: String,
    pub label_file: Option<String>,
    pub is_labeled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut out = String::from("# id\timage\tlabel\tis_labeled\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.id,
                e.image_file,
                e.label_file.as_deref().unwrap_or("-"),
                u8::from(e.is_labeled)
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| Error::Dataset(format!("manifest line {}: {m}", n + 1));
            if cols.len() != 4 {
                return Err(bad("expected 4 tab-separated columns"));
            }
            let is_labeled = match cols[3] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("is_labeled must be 0 or 1")),
            };
            let label_file = (cols[2] != "-").then(|| cols[2].to_string());
            if is_labeled && label_file.is_none() {
                return Err(bad("labeled entry without label file"));
            }
            entries.push(ManifestEntry {
                id: cols[0].to_string(),
                image_file: cols[1].to_string(),
                label_file,
                is_labeled,
            });
        }
        Ok(Self { entries })
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn save_dataset(split: &DatasetSplit, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    split.validate()?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    write(&root.join("dataset.txt"), format!("num_classes={}\n", split.num_classes))?;
    for (kind, samples) in split.parts() {
        let dir = root.join(kind.dir_name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut manifest = Manifest::default();
        for s in samples {
            let image_file = format!("{}.image.segt", s.id);
            save_tensor(&Tensor::from(&s.image), dir.join(&image_file))?;
            let label = s.label().or(s.hidden_label());
            let label_file = match label {
                Some(l) => {
                    let f = format!("{}.label.segt", s.id);
                    save_tensor(&Tensor::from(l), dir.join(&f))?;
                    Some(f)
                }
                None => None,
            };
            manifest.entries.push(ManifestEntry {
                id: s.id.clone(),
                image_file,
                label_file,
                is_labeled: s.is_labeled(),
            });
        }
        write(&dir.join("manifest.txt"), manifest.render())?;
    }
    Ok(())
}

/// Loads a dataset directory. With `with_unlabeled = false` the unlabeled
/// split is not touched at all, so its files need not exist.
pub fn load_dataset(root: impl AsRef<Path>, with_unlabeled: bool) -> Result<DatasetSplit> {
    let root = root.as_ref();
    let meta_path = root.join("dataset.txt");
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let num_classes = meta
        .lines()
        .find_map(|l| l.trim().strip_prefix("num_classes="))
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::Dataset(format!("{}: missing num_classes", meta_path.display())))?;

    let mut parts: Vec<Vec<Sample>> = Vec::with_capacity(4);
    for kind in SplitKind::ALL {
        if kind == SplitKind::Unlabeled && !with_unlabeled {
            parts.push(Vec::new());
            continue;
        }
        parts.push(load_split(&root.join(kind.dir_name()), kind)?);
    }
    let test = parts.pop().unwrap();
    let validation = parts.pop().unwrap();
    let unlabeled = parts.pop().unwrap();
    let labeled = parts.pop().unwrap();
    let split = DatasetSplit {
        labeled,
        unlabeled,
        validation,
        test,
        num_classes,
    };
    split.validate()?;
    Ok(split)
}

fn load_split(dir: &PathBuf, kind: SplitKind) -> Result<Vec<Sample>> {
    let manifest_path = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = Manifest::parse(&text)?;
    manifest
        .entries
        .into_iter()
        .map(|e| {
            let image = Image::try_from(load_tensor(dir.join(&e.image_file))?)?;
            let label = e
                .label_file
                .as_ref()
                .map(|f| load_tensor(dir.join(f)).and_then(LabelMap::try_from))
                .transpose()?;
            match (kind, e.is_labeled, label) {
                (SplitKind::Unlabeled, false, hidden) => Sample::unlabeled(e.id, image, hidden),
                (SplitKind::Unlabeled, true, _) => {
                    Err(Error::Dataset(format!("unlabeled split lists labeled sample {:?}", e.id)))
                }
                (_, true, Some(label)) => Sample::labeled(e.id, image, label),
                _ => Err(Error::Dataset(format!(
                    "{} sample {:?} must be labeled",
                    kind.dir_name(),
                    e.id
                ))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split_dataset, GenConfig};

    fn small_split() -> DatasetSplit {
        let cfg = GenConfig {
            count: 12,
            height: 8,
            width: 8,
            ..Default::default()
        };
        split_dataset(generate_synthetic(&cfg, 2).unwrap(), 3, 0.25, 2, 2, 4).unwrap()
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let split = small_split();
        save_dataset(&split, dir.path()).unwrap();
        let back = load_dataset(dir.path(), true).unwrap();
        assert_eq!(back, split);
        assert!(back.unlabeled.iter().all(|s| s.hidden_label().is_some() && !s.is_labeled()));
    }

    #[test]
    fn unlabeled_files_optional_when_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let split = small_split();
        save_dataset(&split, dir.path()).unwrap();
        fs::remove_dir_all(dir.path().join("unlabeled")).unwrap();
        let back = load_dataset(dir.path(), false).unwrap();
        assert!(back.unlabeled.is_empty());
        assert_eq!(back.labeled, split.labeled);
        assert!(load_dataset(dir.path(), true).is_err());
    }

    #[test]
    fn manifest_parse_rejects_garbage() {
        assert!(Manifest::parse("a\tb\tc\n").is_err());
        assert!(Manifest::parse("a\tb\t-\t1\n").is_err());
        assert!(Manifest::parse("a\tb\t-\t2\n").is_err());
        let m = Manifest::parse("# header\na\tb\t-\t0\n").unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(Manifest::parse(&m.render()).unwrap(), m);
    }
}
